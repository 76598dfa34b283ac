#include "cli.hpp"

int main(int argc, char** argv) { return rankiq::cli::run(argc, argv); }
