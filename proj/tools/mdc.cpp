#include <string>
#include <vector>

#include "mdc/cli.hpp"

int main(int argc, char** argv) { return mdc::run_cli(std::vector<std::string>(argv + 1, argv + argc)); }
