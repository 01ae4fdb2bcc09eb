#include "lcn/cli.hpp"

int main(int argc, char** argv) {
    return lcn::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
