fn main() { std::process::exit(floorpose::cli::main()) }
