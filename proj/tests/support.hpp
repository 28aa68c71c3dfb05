#pragma once

#include "doctest.h"

#include "repclass/error.hpp"

/// Kind of the repclass::Error thrown by f; fails the test if nothing is thrown.
template <typename F>
repclass::ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const repclass::Error& e) {
    return e.kind();
  }
  FAIL("expected a repclass::Error");
  return repclass::ErrorKind::InvalidArgument;
}
