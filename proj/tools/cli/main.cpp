#include "cli/cli.hpp"

int main(int argc, char** argv) { return ipad::cli::run(argc, argv); }
