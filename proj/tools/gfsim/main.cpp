#include <iostream>

#include "gfsim/app.hpp"

int main(int argc, char** argv) {
    return gfsim::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
