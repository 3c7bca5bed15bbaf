#include <string>
#include <vector>

#include "gridshare/cli.hpp"

int main(int argc, char** argv) {
    return gridshare::cli::run_command(std::vector<std::string>(argv, argv + argc));
}
