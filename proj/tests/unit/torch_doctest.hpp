#pragma once

// libtorch's logging header defines CHECK-style macros that collide with
// doctest's; load torch first and let doctest own the names.
#include <torch/torch.h>

#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LT
#undef CHECK_LE
#undef CHECK_GT
#undef CHECK_GE

#include <doctest.h>
