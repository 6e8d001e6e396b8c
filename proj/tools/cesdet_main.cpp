#include "cesdet/cli.hpp"

int main(int argc, char** argv) { return cesdet::cli::run(argc, argv); }
