#include <iostream>

#include "ssim/cli.hpp"

int main(int argc, char** argv) { return ssim::cli::run(argc, argv, std::cout, std::cerr); }
