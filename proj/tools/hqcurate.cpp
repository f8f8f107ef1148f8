// SPDX-License-Identifier: Apache-2.0

#include "hqc/cli.hpp"

#include <iostream>
#include <string>
#include <vector>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return hqc::dispatch(args, std::cout, std::cerr);
}
