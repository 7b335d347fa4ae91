fn main() {
    // placeholder; CLI lands with the sweep module
}
