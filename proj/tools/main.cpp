#include "cli.hpp"

int main(int argc, char** argv) { return chime::cli::run(argc, argv); }
