#include <iostream>

#include "qsdlab/cli.hpp"

int main(int argc, char** argv) {
    return qsd::run(argc, argv, std::cout, std::cerr);
}
