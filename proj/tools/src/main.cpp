#include <iostream>

#include "sqr_cli/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return sqr::cli::run(args, std::cout, std::cerr);
}
