#include "iloc/cli.hpp"

int main(int argc, char** argv) { return iloc::cli::run(argc, argv); }
