namespace acdisk {}
