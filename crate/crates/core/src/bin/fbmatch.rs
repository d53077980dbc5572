fn main() {
    std::process::exit(fbmatch::cli::run(std::env::args_os()));
}
