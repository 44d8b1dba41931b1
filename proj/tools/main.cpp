#include "dtl/cli.hpp"

#include <iostream>

#ifdef __GLIBC__
#include <malloc.h>
#endif

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Training frees and reallocates megabyte activations every batch; without
  // this glibc returns the heap top to the kernel each time.
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
  std::vector<std::string> args(argv + 1, argv + argc);
  return dtl::cli::run(args, std::cout, std::cerr);
}
