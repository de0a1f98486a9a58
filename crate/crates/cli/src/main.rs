fn main() {
    std::process::exit(witbound::run());
}
