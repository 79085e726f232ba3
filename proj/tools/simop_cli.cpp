#include "cli_app.hpp"

int main(int argc, char** argv) { return simop::cli::run(argc, argv); }
