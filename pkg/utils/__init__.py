# utils module