fn main() {
    std::process::exit(graph_evo::cli::main());
}
