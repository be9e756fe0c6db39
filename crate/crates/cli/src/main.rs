fn main() {
    println!("quadlab cli: not wired up yet");
}
