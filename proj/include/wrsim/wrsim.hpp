#pragma once

#include "wrsim/address_space.hpp"
#include "wrsim/collectors.hpp"
#include "wrsim/common.hpp"
#include "wrsim/harness.hpp"
#include "wrsim/heap.hpp"
#include "wrsim/memory_device.hpp"
#include "wrsim/runtime.hpp"
#include "wrsim/spaces.hpp"
#include "wrsim/workloads.hpp"
