fn main() {
    std::process::exit(ddm::cli::main_entry());
}
