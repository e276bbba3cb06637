fn main() {
    std::process::exit(tipshift::cli::run(std::env::args_os()));
}
