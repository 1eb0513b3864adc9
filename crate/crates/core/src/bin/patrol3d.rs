fn main() {
    env_logger::init();
    std::process::exit(patrol3d::cli::main_with(std::env::args_os()));
}
