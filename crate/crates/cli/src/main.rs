fn main() {
    std::process::exit(aglnet_cli::run(std::env::args_os()));
}
