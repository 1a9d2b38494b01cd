#pragma once

#include "cli.hpp"
#include "config_set.hpp"
#include "copr.hpp"
#include "error.hpp"
#include "flatten.hpp"
#include "hdl.hpp"
#include "lint.hpp"
#include "logical_view.hpp"
#include "merge.hpp"
#include "multi_dataflow.hpp"
#include "network.hpp"
#include "network_io.hpp"
#include "pipeline.hpp"
#include "power.hpp"
#include "profiler.hpp"
#include "protocol.hpp"
#include "random_networks.hpp"
#include "verifier.hpp"
#include "verilog.hpp"
