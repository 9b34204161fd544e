fn main() {
    std::process::exit(negkit_cli::main_with_env());
}
