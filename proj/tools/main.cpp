#include "oedsteer/cli.hpp"

int main(int argc, char** argv) { return oedsteer::run_cli(argc, argv); }
