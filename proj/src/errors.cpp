#include "weakvar/errors.hpp"
