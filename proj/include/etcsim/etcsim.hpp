#pragma once

#include "etcsim/class_k.hpp"
#include "etcsim/closed_loop.hpp"
#include "etcsim/errors.hpp"
#include "etcsim/history.hpp"
#include "etcsim/lyapunov.hpp"
#include "etcsim/model.hpp"
#include "etcsim/systems.hpp"
#include "etcsim/trigger.hpp"
#include "etcsim/zeno.hpp"
