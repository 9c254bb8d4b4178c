#include "poissonkit/cli/app.hpp"

int main(int argc, char** argv) { return poissonkit::cli::run(argc, argv); }
