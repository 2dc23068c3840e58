#pragma once

namespace crowdnav {

/// Entry point of the `crowdnav` command; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace crowdnav
