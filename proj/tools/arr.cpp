#include "arr/cli/app.hpp"

int main(int argc, char** argv) { return arr::cli::run(argc, argv); }
