"""upir-lab: combinatorial configurations for peer-to-peer user-private
information retrieval, their neighborhood anonymity, a protocol simulator and
the curious-server intersection attacks."""

__version__ = "0.1.0"
