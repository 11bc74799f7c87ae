#include <iostream>

#include "meaniter/cli.hpp"

int main(int argc, char** argv)
{
    return meaniter::cli::run_cli(argc, argv, std::cout, std::cerr);
}
