#include "gbmopt/driver.hpp"

int main(int argc, char** argv) { return gbm::run_cli(argc, argv); }
