#pragma once

#define RLFI_VERSION "0.1.0"
