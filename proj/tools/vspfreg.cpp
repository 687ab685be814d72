#include "vspf/cli.hpp"

int main(int argc, char** argv)
{
    return vspf::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
