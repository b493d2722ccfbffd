#include "carotid/cli.hpp"

int main(int argc, char** argv) { return carotid::cli::run(argc, argv); }
