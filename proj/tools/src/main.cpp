#include "ellipsedet_cli/commands.hpp"

int main(int argc, char** argv) { return ellipsedet::cli::run(argc, argv); }
