#pragma once

#include "gbpfusion/bp/inference.hpp"
#include "gbpfusion/experiment/config.hpp"
#include "gbpfusion/experiment/inconsistency.hpp"
#include "gbpfusion/experiment/report.hpp"
#include "gbpfusion/experiment/runner.hpp"
#include "gbpfusion/forecast/bus_forecasts.hpp"
#include "gbpfusion/fusion/graph_builder.hpp"
#include "gbpfusion/oracle/compare.hpp"
#include "gbpfusion/oracle/fusion_problem.hpp"
#include "gbpfusion/power/case_file.hpp"
#include "gbpfusion/scenario/csv_io.hpp"
#include "gbpfusion/scenario/events.hpp"
