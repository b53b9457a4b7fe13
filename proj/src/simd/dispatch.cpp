#include <atomic>
#include <cstdlib>
#include <string>

#include "pdhams/simd.hpp"

namespace pdhams::simd {

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "unknown";
}

namespace {

const KernelSet* lookup(Isa isa) {
  switch (isa) {
    case Isa::scalar: return &scalar_kernels();
    case Isa::avx2: return avx2_kernels();
    case Isa::neon: return neon_kernels();
  }
  return nullptr;
}

const KernelSet* detect() {
  if (const char* env = std::getenv("PDHAMS_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_kernels();
    if (want == "avx2") return avx2_kernels() ? avx2_kernels() : &scalar_kernels();
    if (want == "neon") return neon_kernels() ? neon_kernels() : &scalar_kernels();
  }
  if (const KernelSet* k = avx2_kernels()) return k;
  if (const KernelSet* k = neon_kernels()) return k;
  return &scalar_kernels();
}

std::atomic<const KernelSet*>& slot() {
  static std::atomic<const KernelSet*> current{detect()};
  return current;
}

}  // namespace

const KernelSet& active() { return *slot().load(std::memory_order_acquire); }

bool select(Isa isa) {
  const KernelSet* k = lookup(isa);
  if (k == nullptr) return false;
  slot().store(k, std::memory_order_release);
  return true;
}

}  // namespace pdhams::simd
