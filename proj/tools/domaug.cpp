#include "domaug/cli.hpp"

int main(int argc, char** argv) { return domaug::cli::run(argc, argv); }
