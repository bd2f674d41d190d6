#pragma once

namespace cohnet {

/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical abort.
int cli_main(int argc, char** argv);

}  // namespace cohnet
