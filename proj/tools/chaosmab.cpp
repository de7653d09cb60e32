#include "chaosmab/cli.hpp"

int main(int argc, char** argv)
{
    return chaosmab::run_cli(argc, argv);
}
