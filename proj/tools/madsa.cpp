#include "madsa/app/cli.hpp"

#include <csignal>
#include <iostream>

namespace {

void on_interrupt(int) { madsa::app::interrupt_flag().store(true); }

}  // namespace

int main(int argc, char** argv) {
  // No SA_RESTART: a blocked read returns so the chat loop can save and exit.
  struct sigaction sa {};
  sa.sa_handler = on_interrupt;
  sigemptyset(&sa.sa_mask);
  sigaction(SIGINT, &sa, nullptr);
  return madsa::app::run(std::vector<std::string>(argv + 1, argv + argc), std::cin, std::cout, std::cerr);
}
