#include <iostream>

#include "knet/cli.hpp"

int main(int argc, char** argv) {
    return knet::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
