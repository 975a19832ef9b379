fn main() {
    println!("luseel");
}
