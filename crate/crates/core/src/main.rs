fn main() {
    std::process::exit(stylewalk::cli::run(std::env::args_os()));
}
