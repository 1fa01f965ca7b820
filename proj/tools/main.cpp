#include "cli.hpp"

int main(int argc, char** argv) { return gridsens::cli::cli_dispatch(argc, argv); }
