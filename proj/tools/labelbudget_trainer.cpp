// Builtin learner behind the external trainer protocol: one request line on
// stdin, NDJSON epoch events and a done event on stdout.

#include <iostream>

#include "labelbudget/external_trainer.hpp"

int main() { return labelbudget::serve_builtin(std::cin, std::cout, std::cerr); }
