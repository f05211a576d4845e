"""Link queue model of network traffic flow, with a cell transmission reference."""
