#include "csacdrift/cli.hpp"

#include <string>
#include <vector>

int main(int argc, char** argv) {
    return csacdrift::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
