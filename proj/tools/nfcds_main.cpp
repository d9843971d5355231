#include <iostream>
#include <string>
#include <vector>

#include "nfcds/app.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return nfcds::app::run(args, std::cout, std::cerr);
}
