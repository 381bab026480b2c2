#include "dsr/kernels.hpp"

#include <cstring>
#include <string>

#include "dsr/error.hpp"

namespace dsr::kernels {
namespace {

const Ops* g_active = nullptr;
Backend g_requested = Backend::Auto;

const Ops* resolve(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return &scalar_ops();
    case Backend::Avx2:
      if (avx2_ops() == nullptr || !avx2_runtime_supported())
        fail(ErrCode::BadSpec, "avx2 kernels unavailable on this machine");
      return avx2_ops();
    case Backend::Auto:
      if (avx2_ops() != nullptr && avx2_runtime_supported()) return avx2_ops();
      return &scalar_ops();
  }
  return &scalar_ops();
}

}  // namespace

bool avx2_runtime_supported() {
#if defined(__x86_64__) || defined(_M_X64)
#if defined(__GNUC__) || defined(__clang__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
#else
  return false;
#endif
}

void set_backend(Backend b) {
  g_active = resolve(b);
  g_requested = b;
}

Backend parse_backend(const char* name) {
  const std::string s = name ? name : "";
  if (s == "auto" || s.empty()) return Backend::Auto;
  if (s == "scalar") return Backend::Scalar;
  if (s == "avx2") return Backend::Avx2;
  fail(ErrCode::RangeError, "kernel_backend: expected auto|scalar|avx2, got '" + s + "'");
}

const Ops& ops() {
  if (g_active == nullptr) g_active = resolve(Backend::Auto);
  return *g_active;
}

const char* active_name() { return ops().name; }

}  // namespace dsr::kernels
