fn main() {
    println!("ipal");
}
