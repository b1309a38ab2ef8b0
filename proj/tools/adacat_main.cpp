#include "commands.hpp"

int main(int argc, char** argv) { return adacat::cli::run(argc, argv); }
