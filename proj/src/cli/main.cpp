#include "commands.hpp"

int main(int argc, char** argv) { return tsiv::cli::run(argc, argv); }
