#pragma once

#include <string>

#include "gridmpc/simulator.hpp"

namespace gridmpc {

// Writes run.csv, summary.txt and plotdata/{flows,controls,battery}.csv into
// `out_dir` (created if needed). All numbers use fixed 6-decimal '.'
// formatting, so identical runs produce byte-identical files.
//
// run.csv columns: step, t_s, then per line flow_MW/limit_MW/violation_MW/
// slack_MW, per battery p_MW/e_MWh, per curtailable node p_curt_MW/order_MW,
// and solver_status. The slack column on row k is the slack the controller
// allocated *for* that state (from the solve one step earlier), so it lines
// up with the violation column.
void write_run_outputs(const RunLog& log, const Scenario& scenario,
                       const std::string& out_dir);

}  // namespace gridmpc
