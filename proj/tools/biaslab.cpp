#include <iostream>

#include "biaslab/commands.hpp"

int main(int argc, char** argv)
{
    return biaslab::cli::run(argc, argv, std::cout, std::cerr);
}
