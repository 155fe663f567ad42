#include "pfm/cli/commands.hpp"

int main(int argc, char** argv) { return pfm::cli::run_cli(argc, argv); }
