"""Map spiking neural networks, as directed hypergraphs, onto neuromorphic core meshes."""
