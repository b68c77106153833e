fn main() {
    std::process::exit(boostforest::cli::run(std::env::args_os()));
}
