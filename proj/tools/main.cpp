#include "cli.hpp"

int main(int argc, char** argv)
{
    return matshrink::run_cli(argc, argv);
}
