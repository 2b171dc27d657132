#include "splitfed/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return splitfed::cli::run(argc, argv, std::cout, std::cerr);
}
