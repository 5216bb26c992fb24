#include "commands.hpp"

int main(int argc, char** argv) { return bglstm::cli::run(std::vector<std::string>(argv, argv + argc)); }
